"""Local randomized-network hybrid solvers for Darcy, Stokes, Brinkman and coupled Stokes-Darcy flow."""
