"""Index bookkeeping shared by the geometry and exterior-algebra modules.

Blades are sorted index tuples.  Structure tensors are built once per
(dimension, degree) and cached; covariant derivatives act on jets whose
tensor axes follow the batch axes.
"""
import itertools
from functools import lru_cache

import numpy as np

from .jets import Jet, jet_einsum


def permutation_sign(sequence):
    sequence = list(sequence)
    if len(set(sequence)) != len(sequence):
        return 0
    sign = 1
    for i in range(len(sequence)):
        for j in range(i + 1, len(sequence)):
            if sequence[i] > sequence[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def blades(dim, degree):
    return tuple(itertools.combinations(range(dim), degree))


@lru_cache(maxsize=None)
def blade_index(dim, degree):
    return {blade: i for i, blade in enumerate(blades(dim, degree))}


@lru_cache(maxsize=None)
def wedge_tensor(dim, p, q):
    """W[I, J, K] = sign of I followed by J sorted into K (zero if they overlap)."""
    left, right = blades(dim, p), blades(dim, q)
    target = blade_index(dim, p + q)
    tensor = np.zeros((len(left), len(right), len(blades(dim, p + q))))
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            sign = permutation_sign(a + b)
            if sign:
                tensor[i, j, target[tuple(sorted(a + b))]] = sign
    return tensor


@lru_cache(maxsize=None)
def expand_tensor(dim, p):
    """E[i1..ip, I]: full antisymmetric components from sorted storage."""
    tensor = np.zeros((dim,) * p + (len(blades(dim, p)),))
    index = blade_index(dim, p)
    for full in itertools.permutations(range(dim), p):
        tensor[full + (index[tuple(sorted(full))],)] = permutation_sign(full)
    return tensor


@lru_cache(maxsize=None)
def compress_tensor(dim, p):
    """C[I, i1..ip]: picks the sorted entry of a full antisymmetric array."""
    tensor = np.zeros((len(blades(dim, p)),) + (dim,) * p)
    for k, blade in enumerate(blades(dim, p)):
        tensor[(k,) + blade] = 1.0
    return tensor


@lru_cache(maxsize=None)
def levi_civita(dim):
    tensor = np.zeros((dim,) * dim)
    for perm in itertools.permutations(range(dim)):
        tensor[perm] = permutation_sign(perm)
    return tensor


@lru_cache(maxsize=None)
def complement_signs(dim, p):
    """S[I, J] = sign of (I, J) as a permutation of 0..dim-1, J ranging over (dim-p)-blades."""
    return wedge_tensor(dim, p, dim - p)[..., 0]


@lru_cache(maxsize=None)
def cross_product_tensor():
    """N_A = sum_{I,J} S[I, J, A] (d0^d1)_I (d2^d3)_J is the R^5 cross product of four vectors."""
    pairs = blades(5, 2)
    tensor = np.zeros((len(pairs), len(pairs), 5))
    for i, a in enumerate(pairs):
        for j, b in enumerate(pairs):
            for k in range(5):
                tensor[i, j, k] = permutation_sign(a + b + (k,))
    return tensor


_SLOTS = 'pqrstuv'


def covariant_derivative(tensor, gamma, variance):
    """nabla_c T for a jet tensor; the derivative index is placed first.

    ``variance`` has one character per tensor axis, ``'u'`` for upper and
    ``'d'`` for lower.  ``gamma`` holds Gamma^k_ij on axes (k, i, j).
    """
    rank = len(variance)
    slots = _SLOTS[:rank]
    partial = jet_einsum(f'...{slots}w->...w{slots}', tensor.grad())
    result = partial
    for position, kind in enumerate(variance):
        inner = slots[:position] + 'x' + slots[position + 1:]
        if kind == 'u':
            result = result + jet_einsum(f'...{slots[position]}wx,...{inner}->...w{slots}', gamma, tensor)
        else:
            result = result - jet_einsum(f'...xw{slots[position]},...{inner}->...w{slots}', gamma, tensor)
    return result


def laplacian(tensor, gamma, g_inv, variance=''):
    """g^{ij} nabla_i nabla_j T; T may be a scalar (empty variance)."""
    first = covariant_derivative(tensor, gamma, variance)
    second = covariant_derivative(first, gamma, 'd' + variance)
    slots = _SLOTS[:len(variance)]
    return jet_einsum(f'...ij,...ij{slots}->...{slots}', g_inv, second)


def divergence_upper(field, gamma, variance):
    """nabla_c T^{c...}: contracts the derivative with the first (upper) tensor index."""
    derivative = covariant_derivative(field, gamma, variance)
    slots = _SLOTS[:len(variance) - 1]
    return jet_einsum(f'...cc{slots}->...{slots}', derivative)


def ambient_divergence(vector, gamma):
    """nabla_a V^a for V^a valued in R^5: covariant on a, flat on the ambient slot."""
    partial = jet_einsum('...aAa->...A', vector.grad())
    return partial + jet_einsum('...aab,...bA->...A', gamma, vector)


def symmetrize(tensor):
    return 0.5 * (tensor + jet_einsum('...ab->...ba', tensor))


def as_jet(value, order=0):
    return value if isinstance(value, Jet) else Jet.constant(value, order)
