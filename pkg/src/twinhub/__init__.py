"""twinhub: data-integration backend for digital twins.

Fuses terrain and bathymetry into normalized tile sets, fetches gridded
weather forecasts, replays telemetry archives as live streams, and serves
everything to polling clients through an HTTP snapshot gateway.
"""

__version__ = "0.1.0"
