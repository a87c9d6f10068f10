"""Wire format, simulated network and socket daemons."""
