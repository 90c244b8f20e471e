"""Physical and GPS L1 C/A signal constants used across the package."""

# WGS-84 / broadcast-model constants
SPEED_OF_LIGHT = 299792458.0          # m/s
EARTH_GM = 3.986005e14                # m^3/s^2
EARTH_ROTATION_RATE = 7.2921151467e-5  # rad/s
GPS_PI = 3.1415926535898              # pi as fixed for semicircle scaling

# L1 C/A signal structure
L1_CARRIER_HZ = 1575.42e6
CHIP_RATE_HZ = 1.023e6
CODE_LENGTH_CHIPS = 1023
CODE_PERIOD_S = CODE_LENGTH_CHIPS / CHIP_RATE_HZ   # 1 ms
NAV_BIT_RATE_HZ = 50.0
CODE_PERIODS_PER_BIT = 20
NAV_BIT_PERIOD_S = 1.0 / NAV_BIT_RATE_HZ

# Navigation message framing
SUBFRAME_BITS = 300
WORD_BITS = 30
WORDS_PER_SUBFRAME = 10
SUBFRAME_PERIOD_S = SUBFRAME_BITS / NAV_BIT_RATE_HZ  # 6 s
TOW_UNIT_S = 6.0
TOW_WRAP_UNITS = 100800               # one week in 6 s units
WEEK_SECONDS = 604800.0
PREAMBLE_BITS = (1, 0, 0, 0, 1, 0, 1, 1)

# Nominal GPS orbit
GPS_ORBIT_RADIUS_M = 26_560_000.0
