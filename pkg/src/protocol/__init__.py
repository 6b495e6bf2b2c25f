# Coherent-one-way protocol engine
from .cow import ProtocolConfig, ProtocolError, SlotSequence
from .key_rate import KEY_RATE_MODELS, SKRParams

__all__ = ['ProtocolConfig', 'ProtocolError', 'SlotSequence', 'SKRParams', 'KEY_RATE_MODELS']
