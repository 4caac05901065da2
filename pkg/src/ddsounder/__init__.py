"""ddsounder: multitone drive-by channel sounding, end to end.

Waveform synthesis, geometric channel simulation, coherent receiver
processing and delay-Doppler estimation (multitaper spectrum and sparse
Bayesian recovery) for a 60 GHz vehicle-to-infrastructure sounder.
"""

__version__ = "0.1.0"
