from django.apps import AppConfig


class DfsimConfig(AppConfig):
    name = 'dfsim'
    verbose_name = "DFS entanglement distribution simulator"
