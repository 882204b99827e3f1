"""Software emulation of a small 1-Wire home temperature network.

Layers, bottom to top: byte/bit codecs (`core`), the bus itself (`bus`),
emulated temperature sensors with a room thermal model (`sensor`), a serial
line-driver bridge (`bridge`), a two-LED actuator firmware (`firmware`), the
polling HTTP gateway (`gateway`, `api`), and operator tooling (`cli`,
`scenario`). Everything runs on a simulated clock; no hardware, no wall time.
"""

__version__ = "0.1.0"
