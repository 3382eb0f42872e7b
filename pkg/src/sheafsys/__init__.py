"""Behaviors of dynamical systems as interval sheaves and machine diagrams."""

__version__ = "0.1.0"

from .errors import (
    SheafSysError,
    DomainMismatch,
    EmptyHom,
    OutOfRange,
    MisalignedOffset,
    JunctionMismatch,
    ShiftMismatch,
    GridMismatch,
    NotAMember,
    BlowUp,
    DimensionMismatch,
    StructureViolation,
    NoninteractionViolation,
    ConstraintViolation,
    MissingAuxTag,
    NotClosed,
    ConfigError,
)
from .interval_sheaf import (
    IntObject,
    IntMorphism,
    identity_int,
    compose_int,
    Token,
    Trajectory,
    identical,
    sup_distance,
    close_members,
    restrict,
    glue,
    BehaviorSheaf,
    CutCheck,
    AxiomReport,
    check_sheaf_axioms,
    token_trajectory,
    constant_sheaf,
    write_csv,
    read_csv,
)
from .ode_behavior import (
    VectorField,
    grid_derivative,
    integrate,
    membership_residual,
    lipschitz_estimate,
    OdeBehavior,
)
from .machine import (
    Machine,
    ControlledField,
    iso_machine,
    MachineMorphism,
    identity_morphism,
    morphism_defect,
    compose_morphisms,
    leg_restriction_defect,
    injectivity_probe,
    ProbeResult,
    DiagramReport,
    verify_port_control_diagram,
)
from .port_hamiltonian import (
    PHSystem,
    ph_system,
    check_structure,
    closed_behavior,
    extended_behavior,
    extended_sheaf,
    embed_closed,
    AuxHamiltonian,
    SampledCurve,
    aux_zero,
    aux_linear,
    aux_quadratic,
    power_balance,
    dissipation_margin,
    closed_energy_drift,
    extended_energy,
    output_stencil_defect,
    closed_machine,
    enclosing_machine,
    ph_iso_machine,
    build_ph_diagram,
)
from .metriplectic import (
    MetriplecticSystem,
    metriplectic_system,
    check_metriplectic_structure,
    noninteraction_residuals,
    closed_metriplectic_behavior,
    extended_metriplectic_behavior,
    extended_metriplectic_sheaf,
    embed_metriplectic,
    side_condition_residuals,
    assert_side_conditions,
    degeneracy_audit,
    rate_audit,
    extended_psd_min,
    port_metriplectic_machine,
    closed_metriplectic_machine,
    enclosing_metriplectic_machine,
    build_metriplectic_diagram,
)
from .systems import (
    Polynomial,
    parse_polynomial,
    mass_spring_system,
    rigid_body_system,
    blowup_field,
    linear_field,
    SystemBundle,
    BUILTIN_SYSTEMS,
    resolve_builtin,
    load_config,
    bundle_from_config,
    seeded_initial_states,
)

__all__ = [name for name in dir() if not name.startswith("_")]
