"""Layout error detection toolkit."""
