# Per-link tracking and multistatic localization
