"""Streamlined gate-set-tomography experiment designs via per-germ global
fiducial pair reduction, with Fisher-information and simulation tooling."""
