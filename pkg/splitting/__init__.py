"""
splitting – multiprecision lab for exponentially small splitting of separatrices
near resonances of periodically perturbed one-degree-of-freedom Hamiltonians.
"""
__version__ = "0.1.0"
