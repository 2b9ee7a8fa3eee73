# Puts the repository root on sys.path when the suite is collected by pytest
