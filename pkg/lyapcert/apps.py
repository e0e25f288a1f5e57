from django.apps import AppConfig


class LyapcertConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lyapcert'
    verbose_name = 'Stability certification'
