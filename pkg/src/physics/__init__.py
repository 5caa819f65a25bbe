"""Physics core: geometry, couplings, operator algebra, spectra, and dynamics."""
