# Frequency-domain channel synthesis
