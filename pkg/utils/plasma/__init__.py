"""
Kinetic sheath toolkit: end states, stationary sheaths, Poisson and Vlasov solvers, diagnostics.
"""
