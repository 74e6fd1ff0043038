# Версия движка пишется в метаданные ResultsTable
__version__ = "1.0.0"
