/**
 * Registration form.  Validation happens server-side; problem objects come
 * back either field-scoped (rendered inline next to the input) or
 * form-level (duplicate-file-key and anything else without a field).
 */

import { ApiClient, ApiError } from '../api.js';
import { clear, el } from '../dom.js';
import type { ApplicationRecord, RegistrationInput } from '../types.js';

const FIELDS: Array<{ name: string; label: string; required: boolean }> = [
  { name: 'name', label: 'Application name', required: true },
  { name: 'owner', label: 'Owner', required: true },
  { name: 'line_manager', label: 'Line manager', required: false },
  { name: 'business_process', label: 'Business process', required: false },
  { name: 'file_key', label: 'Monitored file key', required: false },
];

export function renderRegistrationForm(
  root: HTMLElement,
  client: ApiClient,
  onRegistered: (record: ApplicationRecord) => void,
): HTMLFormElement {
  clear(root);
  const form = el('form', { class: 'registration-form', novalidate: 'novalidate' });

  for (const field of FIELDS) {
    form.append(
      el(
        'label',
        { class: 'form-row' },
        field.label + (field.required ? ' *' : ''),
        el('input', { name: field.name, type: 'text' }),
        el('span', { class: 'field-error', 'data-error-for': field.name }),
      ),
    );
  }

  const categorySelect = el('select', { name: 'category' });
  for (const value of ['financial', 'operational']) {
    categorySelect.append(el('option', { value }, value));
  }
  const tierSelect = el('select', { name: 'tier' });
  for (const value of ['critical', 'significant', 'standard']) {
    tierSelect.append(el('option', { value }, value));
  }
  form.append(
    el('label', { class: 'form-row' }, 'Category', categorySelect,
      el('span', { class: 'field-error', 'data-error-for': 'category' })),
    el('label', { class: 'form-row' }, 'Criticality tier', tierSelect,
      el('span', { class: 'field-error', 'data-error-for': 'tier' })),
  );

  const formError = el('p', { class: 'form-error', role: 'alert' });
  const submit = el('button', { type: 'submit' }, 'Register application');
  form.append(formError, submit);

  form.addEventListener('submit', async (event) => {
    event.preventDefault();
    formError.textContent = '';
    form.querySelectorAll('.field-error').forEach((node) => (node.textContent = ''));

    const data = new FormData(form);
    const input: RegistrationInput = {
      name: String(data.get('name') ?? ''),
      owner: String(data.get('owner') ?? ''),
      category: String(data.get('category')) as RegistrationInput['category'],
      tier: String(data.get('tier')) as RegistrationInput['tier'],
    };
    const lineManager = String(data.get('line_manager') ?? '');
    if (lineManager) input.line_manager = lineManager;
    const process = String(data.get('business_process') ?? '');
    if (process) input.business_process = process;
    const fileKey = String(data.get('file_key') ?? '');
    if (fileKey) input.file_key = fileKey;

    try {
      const record = await client.registerApplication(input);
      form.reset();
      onRegistered(record);
    } catch (error) {
      if (error instanceof ApiError && error.problem.field) {
        const slot = form.querySelector(`[data-error-for="${error.problem.field}"]`);
        if (slot) {
          slot.textContent = error.problem.message;
          return;
        }
      }
      formError.textContent =
        error instanceof ApiError ? error.problem.message : String(error);
    }
  });

  root.append(form);
  return form;
}
