# Theorem lab package
