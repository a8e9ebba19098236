# Marks *deskasm* as a Python package: desk-scale teaching, pose detection and
# assembly planning for two rigid parts.
