// Experiment templates arrive as JSON metadata; the form adapts itself
// to whatever fields the template declares.

import type { TemplateDoc, TemplateFieldDoc } from "./types.js";

export interface SelectField {
  kind: "select";
  key: string;
  label: string;
  options: { label: string; value: string }[];
  value: string;
}

export interface NumberField {
  kind: "number";
  key: string;
  label: string;
  placeholder: string;
  min?: number;
  max?: number;
  step?: number;
  value: string; // raw input text; parsed on validation
}

export type FormField = SelectField | NumberField;

export class SchemaShapeError extends Error {}

const optionEntries = (field: TemplateFieldDoc): { label: string; value: string }[] => {
  const out: { label: string; value: string }[] = [];
  for (const entry of field.options ?? []) {
    for (const [label, value] of Object.entries(entry)) {
      out.push({ label, value: String(value) });
    }
  }
  return out;
};

export const buildFormModel = (doc: TemplateDoc): FormField[] => {
  const fields: FormField[] = [];
  for (const [key, field] of Object.entries(doc.configuration ?? {})) {
    if (field.type === "select") {
      const options = optionEntries(field);
      if (options.length === 0) {
        throw new SchemaShapeError(`select field "${key}" has no options`);
      }
      fields.push({
        kind: "select",
        key,
        label: field.name ?? key,
        options,
        value: field.value !== undefined ? String(field.value) : options[0].value,
      });
    } else if (field.type === "number") {
      fields.push({
        kind: "number",
        key,
        label: field.name ?? key,
        placeholder: field.placeholder ?? "",
        min: field.min,
        max: field.max,
        step: field.step,
        value: field.value !== undefined ? String(field.value) : "",
      });
    } else {
      throw new SchemaShapeError(`field "${key}" has unknown type "${(field as { type: string }).type}"`);
    }
  }
  return fields;
};

export const fieldError = (field: FormField): string | null => {
  if (field.kind === "select") {
    return field.options.some((o) => o.value === field.value)
      ? null
      : `choose one of ${field.options.map((o) => o.label).join(", ")}`;
  }
  if (field.value.trim() === "") {
    return "required";
  }
  const parsed = Number(field.value);
  if (!Number.isFinite(parsed)) {
    return "must be a number";
  }
  if (field.min !== undefined && parsed < field.min) {
    return `minimum is ${field.min}`;
  }
  if (field.max !== undefined && parsed > field.max) {
    return `maximum is ${field.max}`;
  }
  return null;
};

export const formErrors = (fields: FormField[]): Record<string, string> => {
  const errors: Record<string, string> = {};
  for (const field of fields) {
    const error = fieldError(field);
    if (error !== null) {
      errors[field.key] = error;
    }
  }
  return errors;
};

// Submit stays disabled until every field validates against its bounds.
export const submitEnabled = (fields: FormField[]): boolean =>
  Object.keys(formErrors(fields)).length === 0;

export const formValues = (fields: FormField[]): Record<string, string | number> => {
  const values: Record<string, string | number> = {};
  for (const field of fields) {
    values[field.key] = field.kind === "number" ? Number(field.value) : field.value;
  }
  return values;
};

export const setFieldValue = (fields: FormField[], key: string, value: string): FormField[] =>
  fields.map((f) => (f.key === key ? { ...f, value } : f));
