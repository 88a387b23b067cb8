from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('subcommand', models.CharField(max_length=32)),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('status', models.CharField(choices=[('passed', 'Passed'), ('failed', 'Failed')], max_length=16)),
                ('output_dir', models.CharField(max_length=1024)),
                ('seed', models.PositiveBigIntegerField(default=0)),
                ('workers', models.PositiveSmallIntegerField(default=1)),
                ('metrics', models.JSONField(blank=True, default=dict)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('wall_time', models.FloatField(default=0.0)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['subcommand', 'status'], name='pipelinerun_subcommand_idx')],
            },
        ),
    ]
