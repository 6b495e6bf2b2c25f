# Qubit states, processes and tomography
from .qmath import DensityMatrix, InvalidStateError, ProcessMatrix
from .tomography import ChannelModel, MeasurementRecord, TomographyError

__all__ = [
    'DensityMatrix',
    'ProcessMatrix',
    'InvalidStateError',
    'MeasurementRecord',
    'ChannelModel',
    'TomographyError'
]
