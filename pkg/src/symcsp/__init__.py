"""A workbench for finite-domain constraint satisfaction over symmetric and
linear Datalog: polymorphism search, canonical-program evaluation, path
instance reductions, and power-structure flattening."""

__version__ = "0.1.0"
