"""Grids, quadratic pieces, the RRM basis, interpolation and assembly."""
