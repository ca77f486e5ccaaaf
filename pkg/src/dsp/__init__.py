# Radar detection chain
