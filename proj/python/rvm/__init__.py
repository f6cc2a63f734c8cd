"""Random vortex particle solver."""

try:
    from . import _rvm
except ImportError:  # in-tree build: _rvm sits on PYTHONPATH next to the C++ targets
    import _rvm

for _name in dir(_rvm):
    if not _name.startswith("_"):
        globals()[_name] = getattr(_rvm, _name)
del _name

__version__ = _rvm.__version__
