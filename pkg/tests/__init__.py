# Empty __init__.py files for packages
