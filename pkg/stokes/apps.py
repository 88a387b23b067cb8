from django.apps import AppConfig


class StokesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'stokes'
    verbose_name = 'Linear Stokes operators'
