from django.db import models


class ExperimentRun(models.Model):
    KIND_CHOICES = [
        ('figure', 'Figure'),
        ('acceptance', 'Acceptance suite'),
        ('cache', 'Moment cache'),
    ]
    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('passed', 'Passed'),
        ('failed', 'Failed'),
        ('error', 'Error'),
    ]

    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    target = models.CharField(max_length=100)
    parameters = models.JSONField(default=dict, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='pending')
    exit_code = models.IntegerField(null=True, blank=True)
    report = models.JSONField(null=True, blank=True)
    wall_time = models.FloatField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.kind} {self.target} ({self.status}) at {self.created_at}"

    def finish(self, report, finished_at):
        """Store a finished ExperimentReport with its timing."""
        self.report = report.as_dict()
        self.exit_code = report.exit_code
        self.wall_time = report.wall_time
        self.status = {0: 'passed', 1: 'failed'}.get(report.exit_code, 'error')
        self.finished_at = finished_at
        self.save(update_fields=['report', 'exit_code', 'wall_time', 'status', 'finished_at'])
