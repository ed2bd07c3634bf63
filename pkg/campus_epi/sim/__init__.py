"""Stochastic class-meeting epidemic: enrollment, single runs, ensembles."""
