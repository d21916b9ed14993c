# Evaluation framework modules

