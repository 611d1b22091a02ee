"""rtpref - preference estimation from choice and response-time data"""

__version__ = "0.1.0"
