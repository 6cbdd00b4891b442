"""Roof-greening priority and benefit assessment pipeline.

Takes classified point clouds, building footprints, road networks, weather
station records, and socio-economic point data, and produces per-building
greening priorities plus city-level benefit estimates (greenspace exposure,
carbon offsets, energy savings, monetary value).
"""

__version__ = "0.1.0"
