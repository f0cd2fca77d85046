"""Domain services: simulator, scorers, selection pipeline and harness."""
