# Utils package for shared functionality
from .file_manager import RunFileManager
from .random_streams import RandomStreams

__all__ = ['RunFileManager', 'RandomStreams']
