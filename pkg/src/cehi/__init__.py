"""Center-targeted Bayesian multi-objective optimization."""
