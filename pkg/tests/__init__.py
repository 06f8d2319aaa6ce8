"""
Test package for the SIHT toolkit.
"""
