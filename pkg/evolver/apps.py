from django.apps import AppConfig


class EvolverConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'evolver'
    verbose_name = 'Mild-solution time evolver'
