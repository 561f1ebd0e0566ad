# Generated by Django 5.2.6 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=32)),
                ('config_hash', models.CharField(db_index=True, help_text='sha256 of the canonical run configuration', max_length=64, unique=True)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('tool_version', models.CharField(max_length=32)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('report', models.JSONField(help_text='Full report as written to disk')),
                ('passed', models.PositiveIntegerField(default=0)),
                ('failed', models.PositiveIntegerField(default=0, help_text='Rows with verdict DISCREPANCY')),
                ('report_path', models.CharField(blank=True, max_length=500)),
            ],
            options={
                'verbose_name': 'Run record',
                'verbose_name_plural': 'Run records',
                'ordering': ['-created_at'],
            },
        ),
    ]
