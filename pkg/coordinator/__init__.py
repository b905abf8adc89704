# Coordinator package
