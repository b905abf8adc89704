# Restructuring package
