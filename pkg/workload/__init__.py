# Makes the workload a package
