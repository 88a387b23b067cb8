import logging

from django.db import models
from django.utils.translation import gettext_lazy as _

logger = logging.getLogger(__name__)


class PipelineRun(models.Model):
    """One run of a pipeline subcommand, written after its manifest"""

    class Status(models.TextChoices):
        PASSED = 'passed', _('Passed')
        FAILED = 'failed', _('Failed')

    subcommand = models.CharField(max_length=32)
    config_hash = models.CharField(max_length=64, db_index=True)
    status = models.CharField(max_length=16, choices=Status.choices)
    output_dir = models.CharField(max_length=1024)
    seed = models.PositiveBigIntegerField(default=0)
    workers = models.PositiveSmallIntegerField(default=1)
    metrics = models.JSONField(default=dict, blank=True)
    error = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)
    wall_time = models.FloatField(default=0.0)

    class Meta:
        indexes = [
            models.Index(fields=['subcommand', 'status'], name='pipelinerun_subcommand_idx'),
        ]
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.subcommand} {self.config_hash[:12]} ({self.status})"

    @classmethod
    def for_config(cls, config_hash: str):
        return cls.objects.filter(config_hash=config_hash)
