# Target reflectivity and micro-Doppler signatures
