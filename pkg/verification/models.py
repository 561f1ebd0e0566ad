from django.db import models, transaction


class RunRecord(models.Model):
    """One persisted run, keyed by the hash of its configuration"""
    command = models.CharField(max_length=32)
    config_hash = models.CharField(max_length=64, unique=True, db_index=True,
                                   help_text="sha256 of the canonical run configuration")
    seed = models.BigIntegerField(null=True, blank=True)
    tool_version = models.CharField(max_length=32)
    created_at = models.DateTimeField(auto_now_add=True)

    report = models.JSONField(help_text="Full report as written to disk")
    passed = models.PositiveIntegerField(default=0)
    failed = models.PositiveIntegerField(default=0, help_text="Rows with verdict DISCREPANCY")
    report_path = models.CharField(max_length=500, blank=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = "Run record"
        verbose_name_plural = "Run records"

    def __str__(self):
        return f"{self.command} - {self.config_hash[:16]}"

    @property
    def verdict(self):
        return 'PASS' if self.failed == 0 else 'DISCREPANCY'

    @classmethod
    def record(cls, config, digest, report, path):
        """Store a run; an identical configuration returns the existing record."""
        with transaction.atomic():
            record, created = cls.objects.get_or_create(
                config_hash=digest,
                defaults={
                    'command': config.command,
                    'seed': config.seed,
                    'tool_version': report.meta.get('tool_version', ''),
                    'report': report.to_dict(),
                    'passed': report.passed,
                    'failed': report.failed,
                    'report_path': str(path),
                },
            )
        return record, created
