"""
npg-lab: natural policy gradients from Hessian geometries on tabular MDPs.
"""

__version__ = "0.1.0"
