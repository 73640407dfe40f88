from .config import instantiate
