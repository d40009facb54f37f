"""Numerical toolkit for Tollmien-Schlichting instability of boundary-layer
shear profiles: Orr-Sommerfeld spectra, weighted boundary-layer norms,
linear propagation, the asymptotic mode ladder and a nonlinear simulator."""

__version__ = "0.1.0"
