# Configuration package
