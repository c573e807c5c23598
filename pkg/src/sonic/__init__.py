"""Broadcast data-over-FM-audio stack.

Content (webpage screenshots, LLM answers) is packed into a framed,
CRC-protected container, armored with concatenated FEC, modulated to
audio with an OFDM software modem, pushed through a simulated
RSSI-dependent lossy channel, and reconstructed on the receiving side
with pixel-level loss concealment.  A discrete-event simulator models
the nightly transmission queue at scale.
"""

__version__ = "0.1.0"
