# Makes the schedulers a package
