# Experiment runner
from .runner import main
