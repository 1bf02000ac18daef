"""
Source package for the patch-of-interest composition engine
"""
