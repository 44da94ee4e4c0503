"""Trajectory ensembles for non-adiabatic dynamics on mapping phase space."""
