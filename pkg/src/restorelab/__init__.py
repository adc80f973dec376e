"""Speech degradation simulation and restoration evaluation toolkit."""
