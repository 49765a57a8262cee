"""Monte-Carlo simulation study for the DSD model."""
