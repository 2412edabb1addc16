# Keeping a conftest here puts this directory on sys.path so test modules
# can import the shared helpers module.
