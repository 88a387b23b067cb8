from django.apps import AppConfig


class CaloricConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'caloric'
    verbose_name = 'Caloric profiles'
