import { CustomPackage, PatientIntake } from "./types";

/** CARLA lives on a 1.0..4.0 scale in 0.2 steps. */
export function carlaError(value: number | null): string | null {
  if (value === null || Number.isNaN(value)) return "baseline CARLA is required";
  if (value < 1.0 || value > 4.0) return "CARLA must be between 1.0 and 4.0";
  const steps = (value - 1.0) / 0.2;
  if (Math.abs(steps - Math.round(steps)) > 1e-9) {
    return "CARLA uses 0.2 steps";
  }
  return null;
}

export function ageError(value: number | null): string | null {
  if (value === null || Number.isNaN(value)) return "age is required";
  if (!Number.isInteger(value) || value < 18) return "age must be 18 or older";
  return null;
}

/** Client-side errors for the model-required intake fields. */
export function intakeErrors(form: PatientIntake): Record<string, string> {
  const errors: Record<string, string> = {};
  const carla = carlaError(form.baseline_carla);
  if (carla) errors.baseline_carla = carla;
  const age = ageError(form.age_years);
  if (age) errors.age_years = age;
  return errors;
}

export function intakeValid(form: PatientIntake): boolean {
  return Object.keys(intakeErrors(form)).length === 0;
}

/** Editor validation runs before any request leaves the browser. */
export function customPackageError(
  pkg: CustomPackage,
  knownCodes: Set<string>,
): string | null {
  const entries = Object.entries(pkg.service_volume);
  if (entries.length === 0) return "add at least one service";
  for (const [code, count] of entries) {
    if (!knownCodes.has(code)) return `unknown service code: ${code}`;
    if (!Number.isInteger(count) || count < 1) {
      return `count for ${code} must be a whole number of at least 1`;
    }
  }
  return null;
}

export function patientPayload(form: PatientIntake): Record<string, unknown> {
  const payload: Record<string, unknown> = {
    baseline_carla: form.baseline_carla,
    age_years: form.age_years,
    gender: form.gender,
    race: form.race,
    diagnosis_category: form.diagnosis_category,
    payer: form.payer,
    location: form.location,
    county: form.county,
    region_type: form.region_type,
    prior_mobile_crisis: form.prior_mobile_crisis,
  };
  if (form.toms_symptom_baseline !== null) {
    payload.toms_symptom_baseline = form.toms_symptom_baseline;
  }
  if (form.toms_functioning_baseline !== null) {
    payload.toms_functioning_baseline = form.toms_functioning_baseline;
  }
  return payload;
}
