/** Wire types for the scoring service's /v1 endpoints. */

export interface PatientIntake {
  baseline_carla: number | null;
  age_years: number | null;
  gender: string;
  race: string;
  diagnosis_category: string;
  payer: string;
  location: string;
  county: string;
  region_type: string;
  prior_mobile_crisis: boolean;
  toms_symptom_baseline: number | null;
  toms_functioning_baseline: number | null;
}

export interface PackageInfo {
  package_id: string;
  name: string;
  service_volume: Record<string, number>;
}

export interface Recommendation {
  package_id: string;
  p_above: number;
  rank: number;
}

export interface RecommendResponse {
  model: { name: string; version: number };
  recommendations: Recommendation[];
}

export interface CustomPackage {
  package_id: string;
  name: string;
  service_volume: Record<string, number>;
}

export interface RecommendRequest {
  patient: Record<string, unknown>;
  package_ids?: string[];
  custom_packages?: CustomPackage[];
}

/** Field-level rejection from the service (HTTP 400). */
export class FieldError extends Error {
  constructor(
    message: string,
    readonly field: string | null,
  ) {
    super(message);
    this.name = "FieldError";
  }
}

/** Transport failure (connection refused, timeout, ...). */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export const GENDERS = ["F", "M", "Unknown"] as const;
export const RACES = ["White", "Black", "Asian", "Other", "Unknown"] as const;
export const DIAGNOSES = ["Anxiety", "Bipolar", "Depression", "Other"] as const;
export const REGION_TYPES = ["Urban", "Rural"] as const;
