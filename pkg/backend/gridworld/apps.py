from django.apps import AppConfig


class GridworldConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "gridworld"
