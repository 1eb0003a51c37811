from .mechanism import (
    Mechanism,
    StableMechanism,
    GeneralMechanism,
    TiltedMechanism,
    psi,
    psi_inverse,
    psi_theta,
    psi_theta_inverse,
    pi_star_tail,
    phi_small_mass,
    big_G,
)
