# Dataset containers and pipeline records
