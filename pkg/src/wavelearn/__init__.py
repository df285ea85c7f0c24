"""End-to-end waveform learning."""
