"""
Filters package: guided feature filter.
"""

from illumcomp.filters.guided_filter import FilterConfig, guided_filter, guided_filter_bruteforce

__all__ = ["FilterConfig", "guided_filter", "guided_filter_bruteforce"]
