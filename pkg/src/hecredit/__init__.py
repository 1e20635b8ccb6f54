"""Privacy-preserving credit assessment over CKKS-encrypted features, relayed via MQTT."""

__version__ = "0.1.0"
