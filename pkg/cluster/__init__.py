# Makes the cluster a package
