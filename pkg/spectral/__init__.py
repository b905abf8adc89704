# Spectral filtering package
